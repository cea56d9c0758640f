import os

from setuptools import setup


def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


def version():
    scope = {}
    exec(read(os.path.join('workflowrecognition', '_version.py')), scope)
    return scope['version']


setup(
    name="workflowrecognition",
    version=version(),

    platforms="any",

    # Description
    description="Frame-level, clip-level and temporal models for surgical "
                "workflow recognition, with a synthetic benchmark harness",
    long_description=read('README.rst'),

    install_requires=[
        "numpy>=1.17.0",
        "pandas>=1.0.0",
        "scipy>=1.5.0",
        "scikit-learn>=0.22.0",
        "PyYAML>=5.1",
    ],
    extras_require={
        "test": ["pytest", "parameterized"],
    },
    packages=[
        'workflowrecognition',
        'workflowrecognition.datasets',
        'workflowrecognition.algorithms'
    ],
    entry_points={
        'console_scripts': [
            'workflowrecognition = workflowrecognition.cli:main',
        ],
    },
    include_package_data=True,
    package_dir={'workflowrecognition': 'workflowrecognition'},
    package_data={'workflowrecognition': ['datasets/configs/*.yml']},
    python_requires='>=3.6',
    license='GPL-3.0'
)
