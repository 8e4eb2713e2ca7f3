"""
Sparse dataset storage, LIBSVM ingestion and theory constants
"""
