"""
Adaptive dual-free SDCA solvers
"""
