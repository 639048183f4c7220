# CLI IO Tool
# This tool parses run configurations, provides presets and writes result files
