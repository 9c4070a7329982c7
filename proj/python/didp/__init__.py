"""Panel difference-in-differences with an explicit policy-decision variable.

Thin wrapper over the compiled core; report-producing calls return JSON
strings, which `loads` helpers below turn into dicts.
"""

import json as _json

from ._didp import *  # noqa: F401,F403
from ._didp import __version__  # noqa: F401


def did_classic_report(panel, as_att_p=False):
    from ._didp import did_classic
    return _json.loads(did_classic(panel, as_att_p))


def group_time_att_report(panel, g, k, s, control="not_yet"):
    from ._didp import group_time_att
    return _json.loads(group_time_att(panel, g, k, s, control))


def oracle(scm, kind, draws=200000, seed=1, g=-1, k=-1):
    from ._didp import oracle_estimand
    return _json.loads(oracle_estimand(scm, kind, draws, seed, g, k))


def verify(proposition, scm, **kwargs):
    from ._didp import verify_proposition
    return _json.loads(verify_proposition(proposition, scm, **kwargs))
