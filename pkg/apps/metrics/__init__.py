"""
Objectives, duality gap and CSV emission
"""
