from setuptools import setup, find_packages

# Read dependencies from requirements.txt
def read_requirements():
    with open("requirements.txt") as f:
        return [line for line in f.read().splitlines() if line and not line.startswith("#")]

setup(
    name="epistemia",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "examples*"]),
    py_modules=["epistemia"],
    install_requires=read_requirements(),  # Uses requirements.txt
    entry_points={"console_scripts": ["epistemia = epistemia:main"]},
)
