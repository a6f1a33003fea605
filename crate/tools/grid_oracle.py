# Brute-force grid oracles for the frozen solver test instances.
import numpy as np

def rho(u, tau):
    return u * (tau - (u < 0))

rng = np.random.default_rng(7)
# Instance A/C: p=1, n=10 panel rows; usable pairs (x[t-1], y[t]) for t=1..9
xa = np.round(rng.normal(0, 1, 10), 2)
ya = np.round(0.5 + 1.5 * np.r_[0, xa[:-1]] + rng.normal(0, 0.7, 10), 2)
print("xa", list(xa)); print("ya", list(ya))

def grid2(x, y, tau, lam_ridge=0.0, res=1e-3):
    X = x[:-1]; Y = y[1:]
    mus = np.arange(-5, 5 + res / 2, res)
    best = (np.inf, None, None)
    for b in np.arange(-5, 5 + res / 2, res):
        r = Y[None, :] - mus[:, None] - b * X[None, :]
        obj = rho(r, tau).sum(1) + lam_ridge * b * b
        i = obj.argmin()
        if obj[i] < best[0]:
            best = (obj[i], mus[i], b)
    return best

for tau in (0.5, 0.25):
    print("A qr tau", tau, grid2(xa, ya, tau))
print("C ridge tau 0.5 lam 1", grid2(xa, ya, 0.5, 1.0))
print("C ridge tau 0.25 lam 1", grid2(xa, ya, 0.25, 1.0))

# Instance B: p=2, n=12
xb = np.round(rng.normal(0, 1, (12, 2)), 2)
lag = np.vstack([np.zeros(2), xb[:-1]])
yb = np.round(0.3 + lag @ np.array([1.2, -0.4]) + rng.normal(0, 0.5, 12), 2)
print("xb", xb.tolist()); print("yb", list(yb))

def obj3(X, Y, tau, lam, m, b1, b2):
    r = Y[None, :] - m[:, None] - b1[:, None] * X[None, :, 0] - b2[:, None] * X[None, :, 1]
    return rho(r, tau).sum(1) + lam * (np.abs(b1) + np.abs(b2))

def grid3(x, y, tau, lam):
    X = x[:-1]; Y = y[1:]
    center = np.zeros(3); half = 5.0
    for res in (0.05, 0.005, 1e-3):
        ax = [np.arange(c - half, c + half + res / 2, res) for c in center]
        M, B1, B2 = np.meshgrid(*ax, indexing="ij")
        M, B1, B2 = M.ravel(), B1.ravel(), B2.ravel()
        best = (np.inf, None)
        for s in range(0, M.size, 200000):
            o = obj3(X, Y, tau, lam, M[s:s+200000], B1[s:s+200000], B2[s:s+200000])
            i = o.argmin()
            if o[i] < best[0]:
                best = (o[i], (M[s+i], B1[s+i], B2[s+i]))
        center = np.array(best[1]); half = res * 10
    return best

print("B pen tau 0.5 lam 0.7", grid3(xb, yb, 0.5, 0.7))
print("B pen tau 0.75 lam 0.7", grid3(xb, yb, 0.75, 0.7))
