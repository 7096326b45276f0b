"""Smoke test of the triquad_py extension.

Uses an installed module (``maturin develop -m crates/py/Cargo.toml``) when
available; otherwise loads the cdylib that ``cargo build -p triquad-py``
leaves under target/.
"""

import importlib.util
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    try:
        import triquad_py

        return triquad_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libtriquad_py.so"
        if lib.exists():
            tmp = Path(tempfile.mkdtemp()) / "triquad_py.so"
            shutil.copy(lib, tmp)
            spec = importlib.util.spec_from_file_location("triquad_py", tmp)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("triquad_py not found: run `cargo build -p triquad-py` or `maturin develop` first")


def main():
    tq = load()

    rec = tq.classify(17, 3)
    assert rec["theorem"] == "Thm3.3/N=+1", rec["theorem"]
    assert rec["q_index"] == "128" and rec["h2_k"] == "2" and rec["structure"] == "cyclic"
    assert rec["subfield_h2"]["34"] == "2"
    assert rec["kuroda_consistent"] is True

    for p, q in [(5, 7), (5, 3), (3, 11), (3, 7)]:
        rec = tq.classify(p, q)
        assert rec["h2_k"] == "1" and rec["structure"] == "trivial", (p, q, rec)

    assert tq.classify(17, 7)["theorem"] == "Unsupported"
    try:
        tq.classify(9, 3)
    except ValueError as e:
        assert "9 is not prime" in str(e)
    else:
        raise AssertionError("classify(9, 3) must raise")

    assert tq.h2(51) == 2 and tq.h2(34) == 2
    u = tq.fundamental_unit(2)
    assert (u["a"], u["b"], u["denom"], u["norm"]) == (1, 1, 1, -1)
    u = tq.fundamental_unit(2 * 17 * 43)
    assert u["a"] ** 2 - u["d"] * u["b"] ** 2 == u["norm"] * u["denom"] ** 2
    assert tq.kuroda_h2(17, 3, 128) == 2

    found = tq.scan(100, 100, "type22")
    assert found and all(r["structure"] == "two_two" and r["h2_k"] == "4" for r in found)
    assert [(r["p"], r["q"]) for r in found][0] == ("17", "43")

    print(f"smoke test ok: {len(found)} type (2,2) pairs below 100")


if __name__ == "__main__":
    main()
