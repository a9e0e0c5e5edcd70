# %% [markdown]
# # Command line
#
# Every operation is available as `gaussys <command> --input CONFIG.json`.
# Bundled configs are addressed as `example:NAME`.

# %%
import json
import subprocess
import sys


def gaussys(*args):
    proc = subprocess.run([sys.executable, "-m", "gaussys", *args], capture_output=True, text=True)
    print(f"$ gaussys {' '.join(args)}   -> exit {proc.returncode}")
    print(proc.stdout or proc.stderr)
    return proc


gaussys("--list-examples")

# %%
for name in ("brown_resnick", "lebesgue_bm_drift", "ou_gaussian_measure", "bm_nodrift_exp"):
    gaussys("classify", "--input", f"example:{name}", "--format", "text")

# %%
gaussys("verify-stationarity", "--input", "example:brown_resnick", "--replicates", "5000", "--format", "text")

# %%
out = gaussys("intensity", "--input", "example:brown_resnick")
json.loads(out.stdout)["analytic"]
