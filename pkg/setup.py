import os
from setuptools import setup, find_packages

# load __version__ without importing anything
version_file = os.path.join(
    os.path.dirname(__file__),
    'cascadeqm/version.py')
with open(version_file, 'r') as f:
    # use eval to get a clean string of version from file
    __version__ = eval(f.read().strip().split('=')[-1])

with open("README.md", "r") as f:
    long_description = f.read()

setup(
    name='cascadeqm',
    version=__version__,
    description='Cascaded ring-resonator spin-ensemble quantum memory design',
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords=[
        'quantum memory',
        'spin ensemble',
        'ring resonator',
        'cavity',
        'inhomogeneous broadening',
        'impedance matching',
        'transfer function',
        'storage efficiency',
        'etdrk4',
    ],
    license='Apache 2.0',
    packages=find_packages(exclude=["test"]),
    package_data={'cascadeqm': ['data/*.yaml']},
    install_requires=[
        'click',
        'numpy',
        'pandas',
        'PyYAML',
        'scipy',
        'tabulate',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': ['cascadeqm=cascadeqm.cli:cli'],
    },
    classifiers=[
        'License :: OSI Approved :: Apache Software License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Physics',
    ],
    python_requires='>=3.8',
)
