"""Uniform interface over the two high-fidelity problems used by the pipeline."""

import hashlib
import json

import numpy as np

from caerom.burgers import BurgersConfig, solve_burgers
from caerom.elasticity import (
    ElasticityParams,
    NewmarkConfig,
    WallGeometry,
    build_wall_mesh,
    load_ground_motion_csv,
    monitored_rows,
    reduced_wall_geometry,
    solve_wall,
    synthetic_accelerogram,
)
from caerom.errors import ConfigurationError
from caerom.sampling import distribution_from_dict, sample_design
from caerom.surrogate import FfnnArchitecture, conv_autoencoder


class Problem:
    """Parameter space, exact solver and output layout of one experiment."""

    name = None

    def __init__(self, cfg):
        self.cfg = cfg
        self.param_specs = cfg["sampling"]["parameters"]
        self.param_names = [p["name"] for p in self.param_specs]
        self.distributions = [distribution_from_dict(p) for p in self.param_specs]

    @property
    def n_params(self):
        return len(self.param_specs)

    def sample(self, n, seed, method=None, stream="train"):
        """``(n, n_params)`` design; values are rounded to float32 so persisted datasets are exact."""
        method = method or self.cfg["sampling"]["method"]
        theta = sample_design(int(n), self.distributions, _stream_seed(seed, stream), method)
        return theta.astype(np.float32).astype(np.float64)

    def fingerprint(self):
        blob = json.dumps({"problem": self.name, "solver": self.solver_settings()}, sort_keys=True).encode()
        return hashlib.blake2b(blob, digest_size=8).hexdigest()

    def cae_architecture(self, latent_dim=None):
        c = self.cfg["cae"]
        return conv_autoencoder(
            self.shape, latent_dim or c["latent_dim"], filters=tuple(c["filters"]), kernel_len=c["kernel_len"],
            stride=c["stride"], pool_window=c["pool_window"], hidden_activation=c["hidden_activation"],
            decoder_unpool=c["decoder_unpool"],
        )

    def ffnn_architecture(self, latent_dim=None):
        f = self.cfg["ffnn"]
        return FfnnArchitecture(self.n_params, latent_dim or self.cfg["cae"]["latent_dim"], list(f["hidden"]),
                                activation=f["activation"])

    def resolve_probes(self):
        """``[(label, row, col)]`` for the configured PDF probes."""
        out = []
        for i, p in enumerate(self.cfg["mc"].get("probes", [])):
            if "row" in p and "col" in p:
                row, col = p["row"], p["col"]
            else:
                row, col = self._probe_position(p)
            if not (0 <= row < self.shape[0] and 0 <= col < self.shape[1]):
                raise ConfigurationError(f"probe {p} falls outside the {self.shape} solution matrix")
            out.append((p.get("label", f"probe{i}"), int(row), int(col)))
        return out

    def _probe_position(self, p):
        raise NotImplementedError

    def history_rows(self):
        """``[(label, row)]`` whose full time histories are written to reports."""
        raise NotImplementedError


def _stream_seed(seed, stream):
    """Fold a stream name into the integer seed handed to the sampler."""
    digest = hashlib.blake2b(f"{int(seed)}/{stream}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class BurgersProblem(Problem):
    name = "burgers"

    def __init__(self, cfg):
        super().__init__(cfg)
        self.base = BurgersConfig(**cfg["solver"]["burgers"])

    @property
    def shape(self):
        return (self.base.n_x, self.base.n_t)

    @property
    def time_axis(self):
        return self.base.t

    def solver_settings(self):
        return dict(self.cfg["solver"]["burgers"])

    def solve(self, theta):
        return solve_burgers(self.base.with_nu(float(np.ravel(theta)[0])))

    def _probe_position(self, p):
        if "x" not in p or "t" not in p:
            raise ConfigurationError(f"Burgers probe needs x and t: {p}")
        return int(np.argmin(np.abs(self.base.x - p["x"]))), int(np.argmin(np.abs(self.base.t - p["t"])))

    def history_rows(self):
        return [(label, row) for label, row, _ in self.resolve_probes()]


class ElasticityProblem(Problem):
    name = "elasticity"

    def __init__(self, cfg):
        super().__init__(cfg)
        s = cfg["solver"]["elasticity"]
        g = s["geometry"]
        if g == "default":
            self.geometry = WallGeometry()
        elif g == "reduced":
            self.geometry = reduced_wall_geometry()
        else:
            self.geometry = WallGeometry.from_dict(g)
        self.mesh = build_wall_mesh(self.geometry)
        gm = s.get("ground_motion", {})
        if "csv" in gm:
            motion = load_ground_motion_csv(gm["csv"])
            if motion.n_steps < s["n_steps"]:
                raise ConfigurationError(f"ground motion has {motion.n_steps} samples, {s['n_steps']} requested")
            self.motion = motion.truncated(s["n_steps"])
        else:
            self.motion = synthetic_accelerogram(s["n_steps"], s["dt"], seed=gm.get("seed", 0), pga=gm.get("pga", 3.0),
                                                 f_max=gm.get("f_max", 10.0))
        self.newmark = NewmarkConfig(beta=s["beta"], gamma=s["gamma"], dt=self.motion.dt)
        self.rayleigh = tuple(s["rayleigh"])
        self._monitored = monitored_rows(self.mesh)

    @property
    def shape(self):
        return (self.mesh.d, self.motion.n_steps)

    @property
    def time_axis(self):
        return self.motion.t

    def solver_settings(self):
        s = dict(self.cfg["solver"]["elasticity"])
        s["geometry"] = self.geometry.to_dict()
        s["motion_digest"] = hashlib.blake2b(self.motion.accel.tobytes(), digest_size=8).hexdigest()
        return s

    def params_for(self, theta):
        s = self.cfg["solver"]["elasticity"]
        return ElasticityParams(tuple(float(e) for e in np.ravel(theta)), s["poisson"], s["density"], s["thickness"])

    def solve(self, theta):
        return solve_wall(self.mesh, self.params_for(theta), self.motion, self.newmark, self.rayleigh)

    def _probe_position(self, p):
        if "monitor" not in p or "t" not in p:
            raise ConfigurationError(f"structural probe needs monitor and t: {p}")
        if p["monitor"] >= len(self._monitored):
            raise ConfigurationError(f"monitor index {p['monitor']} out of range")
        return int(self._monitored[p["monitor"]]), int(np.argmin(np.abs(self.motion.t - p["t"])))

    def history_rows(self):
        return [(f"monitor{k}", int(r)) for k, r in enumerate(self._monitored)]


def make_problem(cfg):
    if cfg["problem"] == "burgers":
        return BurgersProblem(cfg)
    if cfg["problem"] == "elasticity":
        return ElasticityProblem(cfg)
    raise ConfigurationError(f"unknown problem {cfg['problem']!r}")
