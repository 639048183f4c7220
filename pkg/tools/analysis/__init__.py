# Analysis Tool
# This tool extracts pulse areas, delays and peaks, and runs parameter scans
