"""Token bucket style limiter (integer arithmetic only)."""

def drain(capacity, used):
    remaining = capacity - used
    if remaining < 0:
        remaining = 0
    return remaining

def refill(level, amount, ceiling):
    raised = level + amount
    if raised > ceiling:
        raised = ceiling
    return raised

bucket = 40
bucket = drain(bucket, 15)
print(bucket)
bucket = refill(bucket, 30, 50)
print(bucket)
bucket = refill(bucket, 30, 50)
print(bucket)
