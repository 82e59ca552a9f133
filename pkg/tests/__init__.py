"""Test suite for treechain."""
