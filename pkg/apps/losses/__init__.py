"""
Loss functions for l2-regularized empirical risk minimization
"""
