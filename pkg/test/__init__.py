"""
Test package for the kinlim simulation suite.

Structure:
- test_utils/     - Shared builders for fields, configs and synthetic diagnostics
- tests/          - Actual test files (unit, integration)
"""
