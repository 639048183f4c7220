# Polaron Rates Tool
# This tool computes phonon-induced scattering rates and tabulates them for fast lookup
