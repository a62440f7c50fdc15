
import sys

from setuptools import setup, find_packages
from setuptools.command.test import test as TestCommand

from unitnorm import __version__ as VERSION


class PyTest(TestCommand):

    user_options = [
        ('pytest-args=', 'a', "Arguments to pass to py.test"),
    ]

    def initialize_options(self):
        TestCommand.initialize_options(self)
        self.pytest_args = []

    def run_tests(self):
        import pytest
        errno = pytest.main(self.pytest_args)
        sys.exit(errno)


description = (
    "Desk-scale speech-to-unit translation with diffusion-normalized "
    "target units and guided non-autoregressive decoding"
)

try:
    long_description = open('README.rst', 'rb').read().decode('utf-8')
except IOError:
    long_description = description

setup(
    name="unitnorm",
    version=VERSION,
    description=description,
    long_description=long_description,
    license="BSD",
    classifiers=[
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    platforms=['any'],
    packages=find_packages(include=['unitnorm*']),
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'sacrebleu>=2.0',
        'setproctitle>=1.1',
    ],
    tests_require=[
        'pytest-cov',
        'pytest',
        'mock',
    ],
    test_suite='tests',
    cmdclass={
        'test': PyTest,
    },
    entry_points={
        'console_scripts': [
            'unitnorm-admin = unitnorm.main:main',
        ]
    },
)
