# simple order-of-operations ledger
def interest(principal, rate_percent, years):
    gained = principal * rate_percent * years // 100
    return gained

def schedule(total):
    first = total // 2
    second = total - first
    message = "split"
    print(message)
    print(first)
    print(second)

base = 900
growth = interest(base, 5, 3)
print(growth)
schedule(base + growth)
