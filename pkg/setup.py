"""
Setup script for the Crossed Bootstrap Toolkit
Creates a virtual environment, installs dependencies and prepares .env
"""
import platform
import subprocess
import sys
from pathlib import Path


def print_colored(message, color='green'):
    """Print colored output"""
    colors = {
        'green': '\033[0;32m',
        'yellow': '\033[1;33m',
        'red': '\033[0;31m',
        'nc': '\033[0m'
    }
    if platform.system() == 'Windows':
        print(message)
    else:
        print(f"{colors.get(color, colors['nc'])}{message}{colors['nc']}")


def check_python_version():
    """Check if Python version meets requirements"""
    print("Checking Python version...")
    required_version = (3, 10)
    current_version = sys.version_info[:2]

    if current_version < required_version:
        print_colored(
            f"Error: Python {required_version[0]}.{required_version[1]} or higher is required",
            'red'
        )
        sys.exit(1)

    print_colored(f"Python {current_version[0]}.{current_version[1]} found", 'green')
    print()


def create_virtual_environment():
    print("Creating virtual environment...")
    if Path("venv").exists():
        print_colored("Virtual environment already exists. Skipping...", 'yellow')
    else:
        subprocess.run([sys.executable, "-m", "venv", "venv"], check=True)
        print_colored("Virtual environment created", 'green')
    print()


def get_venv_python():
    if platform.system() == 'Windows':
        return Path("venv") / "Scripts" / "python.exe"
    return Path("venv") / "bin" / "python"


def install_dependencies():
    print("Installing dependencies...")
    python_path = get_venv_python()
    subprocess.run([str(python_path), "-m", "pip", "install", "--upgrade", "pip"],
                   check=True, capture_output=True)
    subprocess.run([str(python_path), "-m", "pip", "install", "-r", "requirements.txt"],
                   check=True)
    print_colored("Dependencies installed", 'green')
    print()


def create_directories():
    """Output directory for result documents and plot data"""
    for dir_name in ("output", "output/plots"):
        Path(dir_name).mkdir(parents=True, exist_ok=True)
    print_colored("Output directories ready", 'green')
    print()


def setup_environment():
    print("Setting up environment configuration...")
    env_file = Path(".env")
    env_example = Path(".env.example")

    if env_file.exists():
        print_colored(".env file already exists. Skipping...", 'yellow')
    elif env_example.exists():
        env_file.write_text(env_example.read_text())
        print_colored("Environment file created (.env)", 'green')
    else:
        print_colored("Warning: .env.example not found", 'yellow')
    print()


def main():
    print("Crossed Bootstrap Toolkit - Setup Script")
    print("=" * 42)
    print()

    try:
        check_python_version()
        create_virtual_environment()
        install_dependencies()
        create_directories()
        setup_environment()

        print("=" * 42)
        print_colored("Setup completed successfully!", 'green')
        print("=" * 42)
        print()
        print("Next steps:")
        if platform.system() == 'Windows':
            print("   venv\\Scripts\\activate")
        else:
            print("   source venv/bin/activate")
        print("   python main.py summarize data/d1.csv --variance-components configs/components_unit.env")
        print("   python main.py verify configs/verify_quick.env")
        print("   pytest -m 'not slow'")

    except subprocess.CalledProcessError as e:
        print_colored(f"Error during setup: {e}", 'red')
        sys.exit(1)
    except Exception as e:
        print_colored(f"Unexpected error: {e}", 'red')
        sys.exit(1)


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a build backend (pip install): package metadata lives in pyproject.toml
        from setuptools import setup
        setup()
    else:
        main()
