"""
Non-uniform sampling primitives: alias tables, sum trees and mini-batch mixtures
"""
