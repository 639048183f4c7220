# Units Tool
# Internal unit system and conversions shared by every simulator module
