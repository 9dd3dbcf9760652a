from setuptools import setup, find_packages
import os

def read_readme():
    path = os.path.join(os.path.abspath(os.path.dirname(__file__)), 'README.md')
    with open(path, encoding='utf-8') as f:
        return f.read()

setup(
    name='lob_lab',
    version='0.1.0',
    packages=find_packages(exclude=['tests', 'tests.*']),
    include_package_data=True,
    install_requires=[
        'typer<0.10.0',
        'click<8.2.0',
        'rich',
        'python-dotenv',
        'numpy',
        'scipy',
        'pandas',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': [
            'lob_lab=lob_lab.main:main',
        ],
    },
    description='Level-1 limit order book simulation, estimation and price-move probabilities.',
    long_description=read_readme(),
    long_description_content_type='text/markdown',
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.9',
)
