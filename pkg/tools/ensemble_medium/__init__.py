# Ensemble Medium Tool
# This tool discretizes the inhomogeneously broadened quantum dot ensemble
