# Propagation Tool
# This tool marches an optical pulse through the quantum dot medium
