# Empty file to make tests/schemas a Python package
