# command assembly demo
def build_command(user_input):
    """Join a fixed program with one argument."""
    program = "backup-tool"
    separator = " "
    command = program + separator + user_input
    return command

def run_all():
    names = ["alpha", "beta", "gamma"]
    results = []
    for name in names:
        results.append(build_command(name))
    return results

for line in run_all():
    print(line)
