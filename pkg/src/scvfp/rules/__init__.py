# RunSpec checks; every public ``validate_*`` function here is picked up by
# scvfp.core.rules_loader.
