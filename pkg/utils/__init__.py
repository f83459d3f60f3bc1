"""
Utilities package for the FairRec marketing-bias lab
Validators, exceptions, binary container format and helpers
"""
