import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from mtt.corpus import load_manifest  # noqa: E402
from mtt.mode_theory import BUILTINS, builtin  # noqa: E402
from mtt.surface import load_file  # noqa: E402

settings.register_profile("mtt", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mtt")

ROOT = Path(__file__).resolve().parents[1]
MANIFEST = ROOT / "corpus" / "manifest.json"


@pytest.fixture(scope="session")
def manifest():
    return load_manifest(MANIFEST)


@pytest.fixture(scope="session")
def programs(manifest):
    """Every accepted corpus file, checked once: {file name: Program}."""
    out = {}
    for e in manifest.entries:
        if e.verdict == "accept":
            prog, diag = load_file(os.path.join(manifest.root, e.path))
            assert diag is None, f"{e.path}: {diag}"
            out[Path(e.path).stem] = prog
    return out


@pytest.fixture(params=BUILTINS)
def theory(request):
    return builtin(request.param)
