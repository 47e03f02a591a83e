import os
from pathlib import Path
from setuptools import setup, find_packages

cwd = Path(os.path.dirname(os.path.abspath(__file__)))

install_requires = [
    line.strip() for line in (cwd / "requirements.txt").read_text().splitlines() if line.strip()
]

setup(
    name="gfra_sic",
    version="0.1.0",
    description="Slot allocation and power optimization for grant-free random access with SIC receivers",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: BSD License",
        "Operating System :: Unix",
    ],
    python_requires=">=3.10",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=install_requires,
    extras_require={"wandb": ["wandb"], "test": ["pytest"]},
    entry_points={"console_scripts": ["gfra-sic=gfra_sic.launch:main"]},
)
