"""
Test package for the RIR reconstruction tool.
"""
