import json
import os
import subprocess
import sys

import numpy as np

from pshlab import _accel
from pshlab.euler_arnold import table_field
from pshlab.flow import IntegratorConfig, integrate
from pshlab.metric import parse_label

SNIPPET = """
import json
from pshlab._accel import backend
from pshlab.euler_arnold import table_field
from pshlab.flow import IntegratorConfig, integrate
from pshlab.metric import parse_label
traj = integrate(table_field(parse_label("Q2:1")), (0.1, 0.5, -0.2), IntegratorConfig(t_max=5))
print(json.dumps({"backend": backend(), "t": traj.t.tolist(), "y": traj.states.tolist()}))
"""


def _run(env_value):
    env = dict(os.environ)
    env.pop("PSHLAB_DISABLE_NUMBA", None)
    if env_value is not None:
        env["PSHLAB_DISABLE_NUMBA"] = env_value
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def test_fallback_matches_compiled_kernel():
    fast = _run(None)
    slow = _run("1")
    assert fast["backend"] == "numba"
    assert slow["backend"] == "python"
    assert np.array_equal(fast["t"], slow["t"])
    assert np.allclose(fast["y"], slow["y"], rtol=1e-13, atol=0)


def test_falsy_flag_keeps_numba():
    assert _run("0")["backend"] == "numba"


def test_in_process_backend_matches_subprocess():
    traj = integrate(table_field(parse_label("Q2:1")), (0.1, 0.5, -0.2), IntegratorConfig(t_max=5))
    ref = _run(None)
    assert np.array_equal(traj.t, ref["t"])
    assert _accel.backend() in ("numba", "python")
