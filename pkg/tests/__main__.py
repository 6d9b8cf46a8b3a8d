"""
Run tests (acceptance runs excluded; pass -m acceptance for those)
"""

if __name__ == "__main__":
    import os
    import sys

    import pytest

    sys.exit(pytest.main([os.path.dirname(__file__), "-v", "-m", "not acceptance", *sys.argv[1:]]))
