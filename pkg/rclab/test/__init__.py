"""
rclab/test/__init__.py

    sub-package for unit tests, package structure mirrors structure
    of the main package (for example rclab/test/util.py maps
    to rclab/util.py) so it is easy to find the tests for any
    given module
"""
