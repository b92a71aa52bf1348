# Empty file to make tests/commands a Python package
