import sys
import os

# Ensure the project root is in the Python path for module resolution
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from src.ui.command_line import main as run_command_line

def main():
    """
    Runs the command line front end and exits with its status:
    0 on success, 1 on domain errors, 2 on usage errors.
    """
    sys.exit(run_command_line(sys.argv[1:]))

if __name__ == "__main__":
    main()
