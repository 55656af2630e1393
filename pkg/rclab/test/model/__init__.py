"""
rclab/test/model/__init__.py

    subpackage with tests for rclab/model subpackage
"""
