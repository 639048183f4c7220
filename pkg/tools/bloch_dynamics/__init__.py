# Bloch Dynamics Tool
# This tool integrates the polaron master equation of a single quantum dot
