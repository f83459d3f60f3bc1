"""
Services package for the FairRec marketing-bias lab
Business logic layer
"""
