#!/usr/bin/env python3
"""
Test runner for the FairRec marketing-bias lab

Usage:
    python run_tests.py                  # every suite
    python run_tests.py stats_service    # tests/test_stats_service.py only
"""

import logging
import unittest
import sys
import os

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

def run_tests(names=None):
    """Run all tests, or the named suites"""
    # Quiet the INFO logs of the services
    logging.basicConfig(level=logging.WARNING)

    loader = unittest.TestLoader()
    start_dir = 'tests'
    if names:
        suite = unittest.TestSuite(loader.loadTestsFromName(f'tests.test_{name}') for name in names)
    else:
        suite = loader.discover(start_dir, pattern='test_*.py')

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    # Return exit code based on test results
    return 0 if result.wasSuccessful() else 1

if __name__ == '__main__':
    exit_code = run_tests(sys.argv[1:])
    sys.exit(exit_code)
