"""Global GRU forecaster with a negative-binomial output head.

The network reads ``y[t-1] / scale`` (plus z-scored covariates of period
``t``) and emits the mean ``mu = scale * exp(a)`` and dispersion
``alpha = softplus(c)`` of ``y[t]``, with variance ``mu + alpha * mu**2``.
Gradients are derived by hand and propagated through time in NumPy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DivergedTraining, ForecastError, InvalidConfig
from .base import NEGBIN, BaseForecaster, ForecastDistribution, SamplePaths, path_rngs

PARAM_ORDER = ("Wz", "Uz", "bz", "Wr", "Ur", "br", "Wn", "Un", "bn",
               "w_mu", "b_mu", "w_alpha", "b_alpha")
MIN_DISPERSION = 1e-8
LOGIT_CLIP = 30.0
GRAD_FLOOR = 1e-6


def _sigmoid(x):
    return special.expit(x)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    return float(np.log(np.expm1(y)))


def init_params(n_inputs: int, hidden_size: int, rng: np.random.Generator) -> dict:
    """Glorot-uniform input weights, ``1/sqrt(H)``-uniform recurrent weights."""
    D, H = n_inputs, hidden_size
    g = np.sqrt(6.0 / (D + H))
    u = 1.0 / np.sqrt(H)
    p = {}
    for gate in "zrn":
        p["W" + gate] = rng.uniform(-g, g, (D, H))
        p["U" + gate] = rng.uniform(-u, u, (H, H))
        p["b" + gate] = np.zeros(H)
    p["w_mu"] = rng.uniform(-u, u, H)
    p["b_mu"] = np.zeros(())
    p["w_alpha"] = rng.uniform(-u, u, H)
    p["b_alpha"] = np.full((), _softplus_inv(0.5))
    return p


def nb_logpmf(y, mu, alpha):
    """Negative-binomial log-likelihood, real ``y >= 0`` allowed."""
    r = 1.0 / alpha
    return (special.gammaln(y + r) - special.gammaln(r) - special.gammaln(y + 1.0)
            + r * np.log(r / (r + mu)) + y * np.log(mu / (r + mu)))


def nb_nll_grads(y, mu, alpha):
    """Derivatives of ``-log p(y)`` with respect to ``mu`` and ``alpha``."""
    r = 1.0 / alpha
    d_mu = y / mu - (r + y) / (r + mu)
    d_r = special.digamma(y + r) - special.digamma(r) + np.log(r / (r + mu)) + (mu - y) / (r + mu)
    return -d_mu, r * r * d_r


@dataclass(frozen=True)
class WindowBatch:
    """Teacher-forced training windows.

    ``inputs``: ``(N, L, D)``; ``targets`` and ``scale``: ``(N, L)`` and ``(N,)``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    scale: np.ndarray

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx) -> "WindowBatch":
        return WindowBatch(self.inputs[idx], self.targets[idx], self.scale[idx])


def _gru_step(p, x, h):
    z = _sigmoid(x @ p["Wz"] + h @ p["Uz"] + p["bz"])
    r = _sigmoid(x @ p["Wr"] + h @ p["Ur"] + p["br"])
    hr = r * h
    n = np.tanh(x @ p["Wn"] + hr @ p["Un"] + p["bn"])
    return (1.0 - z) * n + z * h, (z, r, hr, n)


def _head(p, h, scale):
    a = np.clip(h @ p["w_mu"] + p["b_mu"], -LOGIT_CLIP, LOGIT_CLIP)
    c = h @ p["w_alpha"] + p["b_alpha"]
    return scale * np.exp(a), _softplus(c) + MIN_DISPERSION, a, c


def loss_and_grad(p: dict, batch: WindowBatch, need_grad: bool = True):
    """Mean NLL over every window step, and its gradient by BPTT."""
    X, Y, s = batch.inputs, batch.targets, batch.scale
    N, L, _ = X.shape
    H = p["Uz"].shape[0]
    h = np.zeros((N, H))
    cache, total = [], 0.0
    for t in range(L):
        h_prev = h
        h, gates = _gru_step(p, X[:, t], h_prev)
        mu, alpha, a, c = _head(p, h, s)
        total -= nb_logpmf(Y[:, t], mu, alpha).sum()
        cache.append((h_prev, h, gates, mu, alpha, a, c))
    count = N * L
    loss = total / count
    if not need_grad:
        return loss, None

    g = {k: np.zeros_like(v) for k, v in p.items()}
    dh_next = np.zeros((N, H))
    for t in reversed(range(L)):
        h_prev, h, (z, r, hr, n), mu, alpha, a, c = cache[t]
        x = X[:, t]
        dmu, dalpha = nb_nll_grads(Y[:, t], mu, alpha)
        da = dmu * mu / count * (np.abs(a) < LOGIT_CLIP)
        dc = dalpha * _sigmoid(c) / count
        g["w_mu"] += h.T @ da
        g["b_mu"] += da.sum()
        g["w_alpha"] += h.T @ dc
        g["b_alpha"] += dc.sum()
        dh = dh_next + np.outer(da, p["w_mu"]) + np.outer(dc, p["w_alpha"])

        dn = dh * (1.0 - z) * (1.0 - n * n)
        dz = dh * (h_prev - n) * z * (1.0 - z)
        g["Wn"] += x.T @ dn
        g["Un"] += hr.T @ dn
        g["bn"] += dn.sum(axis=0)
        dhr = dn @ p["Un"].T
        dr = dhr * h_prev * r * (1.0 - r)
        g["Wz"] += x.T @ dz
        g["Uz"] += h_prev.T @ dz
        g["bz"] += dz.sum(axis=0)
        g["Wr"] += x.T @ dr
        g["Ur"] += h_prev.T @ dr
        g["br"] += dr.sum(axis=0)
        dh_next = dh * z + dhr * r + dz @ p["Uz"].T + dr @ p["Ur"].T
    return loss, g


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        corr1 = 1.0 - self.b1 ** self.t
        corr2 = 1.0 - self.b2 ** self.t
        for k in PARAM_ORDER:
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * grads[k]
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * grads[k] ** 2
            params[k] = params[k] - self.lr * (self.m[k] / corr1) / (np.sqrt(self.v[k] / corr2) + self.eps)


def clip_gradients(grads: dict, max_norm: float) -> float:
    norm = float(np.sqrt(sum(float((g ** 2).sum()) for g in grads.values())))
    if max_norm and norm > max_norm:
        for k in grads:
            grads[k] = grads[k] * (max_norm / norm)
    return norm


class RNNForecaster(BaseForecaster):
    """Single-layer GRU trained jointly on all series (a global model).

    Parameters
    ----------
    hidden_size : int
        GRU units.
    horizon : int
        Prediction length the model is trained for.
    context_length : int or None
        Conditioning length; ``None`` means ``2 * horizon``.  Training windows
        cover ``context_length + horizon`` steps and forecasting warms the
        network up on the last ``context_length`` observations.
    epochs, learning_rate, batch_size, stride, clip_norm, seed
        Optimiser settings.  ``batch_size=None`` trains full-batch.
    """

    def __init__(self, hidden_size=32, horizon=8, context_length=None, epochs=100,
                 learning_rate=1e-2, batch_size=None, stride=1, clip_norm=10.0, seed=0):
        self.hidden_size = hidden_size
        self.horizon = horizon
        self.context_length = context_length
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.stride = stride
        self.clip_norm = clip_norm
        self.seed = seed

    @property
    def context_(self) -> int:
        return int(self.context_length) if self.context_length else 2 * int(self.horizon)

    def _check_config(self):
        for name in ("hidden_size", "horizon", "epochs", "stride"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be a positive integer")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be positive")

    def initialize(self, n_series: int, scale=None, n_covariates: int = 0, cov_mean=None,
                   cov_std=None):
        """Set fresh weights without training (used by training and by tests)."""
        self.n_series_ = int(n_series)
        self.scale_ = np.ones(n_series) if scale is None else np.asarray(scale, dtype=float)
        self.n_covariates_ = int(n_covariates)
        self.cov_mean_ = np.zeros(n_covariates) if cov_mean is None else np.asarray(cov_mean, float)
        self.cov_std_ = np.ones(n_covariates) if cov_std is None else np.asarray(cov_std, float)
        rng = np.random.default_rng(int(self.seed))
        self.params_ = init_params(1 + self.n_covariates_, int(self.hidden_size), rng)
        self.loss_history_ = []
        self.n_train_ = 0
        return self

    def windows(self, X, covariates=None) -> WindowBatch:
        """Sliding training windows over every series of ``X``."""
        X = np.asarray(X, dtype=float)
        n, J = X.shape
        L = self.context_ + int(self.horizon)
        if n < L + 1:
            raise ForecastError(f"training series need at least {L + 1} periods, got {n}")
        cov = self._norm_cov(covariates, n)
        starts = np.arange(0, n - L, int(self.stride))
        inputs, targets, scales = [], [], []
        for j in range(J):
            for p in starts:
                x = [X[p:p + L, j, None] / self.scale_[j]]
                if cov is not None:
                    x.append(cov[p + 1:p + L + 1, j])
                inputs.append(np.concatenate(x, axis=1))
                targets.append(X[p + 1:p + L + 1, j])
                scales.append(self.scale_[j])
        return WindowBatch(np.array(inputs), np.array(targets), np.array(scales))

    def _norm_cov(self, covariates, n_min):
        if self.n_covariates_ == 0:
            return None
        if covariates is None:
            raise ForecastError("model was trained with covariates; pass them aligned with the series")
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim != 3 or cov.shape[1:] != (self.n_series_, self.n_covariates_) or len(cov) < n_min:
            raise ForecastError(f"covariates must have shape (>={n_min}, {self.n_series_}, "
                                f"{self.n_covariates_})")
        return (cov - self.cov_mean_) / self.cov_std_

    def fit(self, X, y=None, covariates=None):
        self._check_config()
        X = self._validate_fit(X)
        n, J = X.shape
        K = 0
        cov_mean = cov_std = None
        if covariates is not None:
            cov = np.asarray(covariates, dtype=float)
            K = cov.shape[2]
            flat = cov[:n].reshape(-1, K)
            cov_mean = flat.mean(axis=0)
            cov_std = flat.std(axis=0)
            cov_std[cov_std == 0] = 1.0
        self.initialize(J, 1.0 + X.mean(axis=0), K, cov_mean, cov_std)
        batch = self.windows(X, covariates)
        rng = np.random.default_rng([int(self.seed), 1])
        opt = _Adam(self.params_, float(self.learning_rate))
        bs = len(batch) if not self.batch_size else int(self.batch_size)
        history = []
        for epoch in range(int(self.epochs)):
            order = np.arange(len(batch)) if bs >= len(batch) else rng.permutation(len(batch))
            epoch_loss = 0.0
            for lo in range(0, len(batch), bs):
                part = batch.subset(order[lo:lo + bs])
                loss, grads = loss_and_grad(self.params_, part)
                if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise DivergedTraining(epoch)
                clip_gradients(grads, float(self.clip_norm))
                opt.step(self.params_, grads)
                epoch_loss += loss * len(part)
            history.append(epoch_loss / len(batch))
        self.loss_history_ = history
        self.n_train_ = n
        return self

    def _warm_up(self, h, cov, n_rows):
        """Run the recurrence over the last context observations of each series.

        Returns hidden states ``(n_rows * J, H)`` and the head output for the
        first future period.
        """
        J, H = self.n_series_, int(self.hidden_size)
        n = len(h)
        start = max(0, n - self.context_)
        state = np.zeros((n_rows * J, H))
        out = None
        scale = np.tile(self.scale_, n_rows)
        for i in range(start, n):
            state, _ = _gru_step(self.params_, self._input(h[i], cov, i + 1, n_rows), state)
        out = _head(self.params_, state, scale)
        return state, scale, out

    def _input(self, y_row, cov, t_next, n_rows):
        """Network input for the step consuming ``y_row`` and predicting period ``t_next``."""
        y_row = np.broadcast_to(y_row, (n_rows, self.n_series_)).reshape(-1)
        x = [(y_row / np.tile(self.scale_, n_rows))[:, None]]
        if cov is not None:
            x.append(np.tile(cov[t_next], (n_rows, 1)))
        return np.concatenate(x, axis=1)

    def predict_distribution(self, history, horizon, covariates=None):
        h = self._validate_history(history, horizon)
        horizon = int(horizon)
        cov = self._norm_cov(covariates, len(h) + horizon)
        state, scale, (mu, alpha, _, _) = self._warm_up(h, cov, 1)
        mus, alphas = [mu], [alpha]
        for k in range(1, horizon):
            r = 1.0 / alpha
            med = stats.nbinom.ppf(0.5, r, r / (r + mu))
            state, _ = _gru_step(self.params_, self._input(med, cov, len(h) + k, 1), state)
            mu, alpha, _, _ = _head(self.params_, state, scale)
            mus.append(mu)
            alphas.append(alpha)
        return ForecastDistribution(NEGBIN, np.array(mus), np.array(alphas), self._step(h))

    def sample_paths(self, history, horizon, n_paths, seed, covariates=None):
        h = self._validate_history(history, horizon)
        horizon, n_paths = int(horizon), int(n_paths)
        cov = self._norm_cov(covariates, len(h) + horizon)
        J = self.n_series_
        u = np.stack([g.random((horizon, J)) for g in path_rngs(seed, n_paths)])
        state, scale, (mu, alpha, _, _) = self._warm_up(h, cov, n_paths)
        out = np.empty((n_paths, horizon, J))
        for k in range(horizon):
            r = 1.0 / alpha
            draw = stats.nbinom.ppf(u[:, k].reshape(-1), r, r / (r + mu))
            out[:, k] = draw.reshape(n_paths, J)
            if k + 1 < horizon:
                state, _ = _gru_step(self.params_, self._input(out[:, k], cov, len(h) + k + 1, n_paths),
                                     state)
                mu, alpha, _, _ = _head(self.params_, state, scale)
        return SamplePaths(out, int(seed))


def rnn_train(data, config: dict | None = None, seed: int = 0) -> RNNForecaster:
    """Fit an :class:`RNNForecaster` on a ``TimeSeriesSet`` (training part) or array."""
    cfg = dict(config or {})
    cfg["seed"] = seed
    model = RNNForecaster(**cfg)
    if hasattr(data, "training"):
        train = data.training()
        return model.fit(train.values, covariates=train.covariate_array())
    return model.fit(data)


def rnn_gradient_check(model: RNNForecaster, batch: WindowBatch, n_checks: int = 60,
                       step: float = 1e-5, seed: int = 0) -> float:
    """Largest relative error between the analytic NLL gradient and central
    differences on ``n_checks`` randomly chosen weights.

    Entries whose gradient magnitude is below ``GRAD_FLOOR * max(1, |loss|)``
    sit under the resolution of a central difference at this step and are
    skipped; further weights are drawn until ``n_checks`` were compared.
    """
    check_is_fitted(model, "params_")
    if len(batch) > 4:
        raise ValueError("gradient check expects at most four windows")
    params = {k: np.array(v, dtype=float) for k, v in model.params_.items()}
    loss, grads = loss_and_grad(params, batch)
    floor = GRAD_FLOOR * max(1.0, abs(loss))
    sizes = [params[k].size for k in PARAM_ORDER]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    order = np.random.default_rng(seed).permutation(offsets[-1])
    worst, compared = 0.0, 0
    for flat in order:
        if compared >= n_checks:
            break
        i = int(np.searchsorted(offsets, flat, side="right") - 1)
        key, pos = PARAM_ORDER[i], int(flat - offsets[i])
        analytic = float(grads[key].reshape(-1)[pos])
        view = params[key].reshape(-1)
        orig = view[pos]
        view[pos] = orig + step
        up, _ = loss_and_grad(params, batch, need_grad=False)
        view[pos] = orig - step
        down, _ = loss_and_grad(params, batch, need_grad=False)
        view[pos] = orig
        numeric = (up - down) / (2 * step)
        denom = max(abs(numeric), abs(analytic))
        if denom < floor:
            continue
        compared += 1
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
