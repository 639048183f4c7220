import os
import sys
import json
from datetime import datetime


def view_results(name=None, data_dir=None):
    """
    Summarize the manifests in the output directory

    Args:
        name: Preset or run name to show. If None, show all.
        data_dir: Output directory (default: SIT_OUTPUT_DIR or data)
    """
    data_dir = data_dir or os.environ.get("SIT_OUTPUT_DIR", "data")
    if not os.path.exists(data_dir):
        print(f"Data directory '{data_dir}' does not exist.")
        print("Please run a preset first.")
        return []

    names = sorted(d for d in os.listdir(data_dir) if os.path.exists(os.path.join(data_dir, d, "manifest.json")))
    if name is not None:
        if name not in names:
            print(f"No results found for: {name}")
            return []
        names = [name]
    if not names:
        print(f"No manifests found in '{data_dir}'.")
        return []

    print("Available results:")
    for entry in names:
        path = os.path.join(data_dir, entry, "manifest.json")
        with open(path, "r") as f:
            manifest = json.load(f)
        mod_time = datetime.fromtimestamp(os.path.getmtime(path)).strftime("%Y-%m-%d %H:%M:%S")

        print(f"\n{entry} (Last updated: {mod_time}):")
        print(f"  config hash: {manifest.get('config_hash', '?')[:16]}")
        if "wall_time_s" in manifest:
            print(f"  wall time: {manifest['wall_time_s']} s")
        for run in manifest.get("runs", []):
            if "output_area" in run:
                print(f"  - {run['label']}: area {run['input_area']:.4f} -> {run['output_area']:.4f} rad")
        for key, value in manifest.get("summary", {}).items():
            print(f"  {key}: {value}")
        for warning in manifest.get("warnings", []):
            print(f"  Warning: {warning}")
        for file_name in manifest.get("files", []):
            print(f"  file: {os.path.join(data_dir, entry, file_name)}")
    return names


def main():
    """
    Main function
    """
    if len(sys.argv) > 1:
        view_results(sys.argv[1])
    else:
        view_results()


if __name__ == "__main__":
    main()
