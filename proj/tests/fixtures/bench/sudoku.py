# Backtracking sudoku solver over a fixed set of puzzles, repeated.
import sys

PUZZLES = [
    "530070000600195000098000060800060003400803001700020006060000280000419005000080079",
    "000000907000420180000705026100904000050000040000507009920108000034059000507000000",
    "030050040008010500460000012070502080000603000040109030250000098001020600080060020",
    "100920000524010000000000070050008102000000000402700090060000000000030945000071006",
]


def parse(text):
    return [int(c) for c in text]


def candidates(grid, pos):
    row, col = divmod(pos, 9)
    used = set()
    for i in range(9):
        used.add(grid[row * 9 + i])
        used.add(grid[i * 9 + col])
    br, bc = 3 * (row // 3), 3 * (col // 3)
    for r in range(br, br + 3):
        for c in range(bc, bc + 3):
            used.add(grid[r * 9 + c])
    return [d for d in range(1, 10) if d not in used]


def solve(grid):
    best, best_opts = -1, None
    for pos in range(81):
        if grid[pos] == 0:
            opts = candidates(grid, pos)
            if not opts:
                return False
            if best_opts is None or len(opts) < len(best_opts):
                best, best_opts = pos, opts
    if best < 0:
        return True
    for d in best_opts:
        grid[best] = d
        if solve(grid):
            return True
    grid[best] = 0
    return False


def checksum(grid):
    return sum(v * (i + 1) for i, v in enumerate(grid))


def main(rounds):
    total = 0
    for _ in range(rounds):
        for p in PUZZLES:
            g = parse(p)
            if not solve(g):
                raise SystemExit("unsolvable")
            total += checksum(g)
    print(total)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 90)
