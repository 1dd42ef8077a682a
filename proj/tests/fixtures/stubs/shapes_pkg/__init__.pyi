from shapes_pkg.base import Medium as Medium, Screen as Screen
