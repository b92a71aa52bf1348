# Empty file to make tests/services a Python package
