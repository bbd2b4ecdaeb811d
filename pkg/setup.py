from setuptools import find_packages, setup

setup(
    name="budgeted-influence",
    version="0.1.0",
    description="Budgeted influence maximization on the integer lattice: offline, online and game-theoretic solvers",
    python_requires=">=3.9",
    packages=find_packages(exclude=("tests", "tests.*", "examples", "examples.*")),
    py_modules=["app"],
    package_data={"config": ["experiment.json"]},
    install_requires=[
        "click>=8.1",
        "jsonschema>=4.17",
        "networkx>=3.0",
        "numpy>=1.24",
        "pandas>=1.5",
        "python-dotenv>=0.21",
        "rich>=13.0",
    ],
    extras_require={"test": ["pytest>=7.0"]},
    entry_points={"console_scripts": ["budgeted-influence=app:main"]},
)
