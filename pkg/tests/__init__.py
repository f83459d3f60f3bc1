# Test package for the FairRec marketing-bias lab
