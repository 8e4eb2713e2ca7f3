"""
Core application for shared errors and solver settings
"""
