with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()
from setuptools import setup
setup(
    name='pysymde',
    version='0.0.0',
    description='Symbolic ODEs, DDEs and SDEs lowered to fast evaluators, with adaptive integrators and Lyapunov exponents.',
    long_description=long_description,
    long_description_content_type="text/markdown",
    license='MIT',
    packages=['pysymde'],
    include_package_data=True,
    python_requires='>=3.7',
    install_requires=['attrs', 'cached-property', 'astor', 'numpy>=1.17', 'scipy', 'networkx'],
    extras_require={'color': ['termcolor']},
    entry_points={'console_scripts': ['pysymde=pysymde.cli:main']},
)
