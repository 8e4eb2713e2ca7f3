"""
Experiment harness: command line, run dispatch and summaries
"""
