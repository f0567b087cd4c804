import pytest

# this directory only makes sense with the renderer installed; the primary
# package's suite must stay runnable without it
pytest.importorskip("plotkit")

HEADER = ("j,gamma_over_omega,kBT_over_omega,channel,efficiency,"
          "trace_drift,min_eigenvalue,failed,wall_time_s")


def write_csv(path, rows):
    lines = [HEADER]
    for (j, g, temp, ch, eff, failed) in rows:
        lines.append(f"{j!r},{g!r},{temp!r},{ch},{eff},1e-14,-1e-15,"
                     f"{int(failed)},0.25")
    path.write_text("\n".join(lines) + "\n")
    return path


def sweep_rows(js=(0.5, 1.0, 1.5, 2.0, 2.5),
               gammas=(1e-3, 1e-2, 1e-1),
               temps=(0.001, 10.0),
               channel="Jz"):
    """Synthetic but schema-faithful sweep: efficiency decays with j and
    gamma, ordered the way the producer writes (j, T, gamma)."""
    rows = []
    for j in js:
        for temp in temps:
            for g in gammas:
                eff = 1.0 / (1.0 + 40.0 * g * (2 * j) * (1 + 0.1 * temp))
                rows.append((j, g, temp, channel, repr(eff), False))
    return rows


@pytest.fixture
def sweep_csv(tmp_path):
    return write_csv(tmp_path / "sweep.csv", sweep_rows())
