"""
rclab/test/tasks/__init__.py

    subpackage with tests for rclab/tasks subpackage
"""
