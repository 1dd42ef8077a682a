import sys

events = []


def tracer(frame, event, arg):
    if event == "call" and frame.f_code.co_name == "target":
        events.append(event)
    return None


def target(x):
    return x + 1


sys.settrace(tracer)
target(1)
target(2)
sys.settrace(None)
print(events)
