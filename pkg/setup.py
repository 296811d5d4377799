from setuptools import setup, find_packages

setup(
    name="stressrelease",
    version="0.1.0",
    description="Exact and thinning simulation of the extrinsic stress-release point process, with reciprocal-moment theory",
    packages=find_packages(include=["src", "src.*"]),
    include_package_data=True,
    install_requires=[
        # Duplicated in requirements.txt for runtime environments
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "pydantic>=2.9.2",
        "python-dotenv>=1.0.1",
        "prometheus-client>=0.21.0",
    ],
    entry_points={
        "console_scripts": [
            "stressrelease=src.cli:main",
        ],
    },
    python_requires=">=3.11",
)
