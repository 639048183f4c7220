import os
import sys
import subprocess
from datetime import datetime

from tools.cli_io.presets import list_presets


def run_all(extra_args=None):
    """
    Run every preset, one process each

    Args:
        extra_args: Global flags passed through to main.py (e.g. ["--threads", "8"])
    """
    presets = list_presets()
    extra_args = list(extra_args or [])

    print(f"Starting presets: {', '.join(presets)}")
    print(f"Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("-" * 50)

    failed = []
    for name in presets:
        print(f"\nRunning preset {name}...")
        try:
            subprocess.run([sys.executable, "main.py", *extra_args, "preset", name], check=True)
            print(f"Preset {name} completed successfully.")
        except subprocess.CalledProcessError as e:
            print(f"Error running preset {name}: {e}")
            failed.append(name)
        print("-" * 50)

    print("\nAll presets completed.")
    print(f"Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    if failed:
        print(f"Failed: {', '.join(failed)}")

    out_dir = os.environ.get("SIT_OUTPUT_DIR", "data")
    print("\nManifests:")
    for name in presets:
        manifest = os.path.join(out_dir, name, "manifest.json")
        if os.path.exists(manifest):
            print(f"- {name}: {manifest}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(run_all(sys.argv[1:]))
