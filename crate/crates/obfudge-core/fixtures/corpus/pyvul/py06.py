# configuration snapshot
class Limits:
    retries = 3
    timeout = 9
    verbose = False

def describe(limits):
    """Render the limits block."""
    parts = [limits.retries, limits.timeout]
    header = "limits"
    print(header)
    print(parts[0] + parts[1])
    print(limits.verbose)

describe(Limits)
total = Limits.retries * Limits.timeout
print(total)
