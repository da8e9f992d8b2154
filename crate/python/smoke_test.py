"""Builds a two-component model, fits it from a crossed start and checks
the basic invariants through the Python bindings."""

import math

import gmm_gem


def main():
    truth = gmm_gem.GaussianMixture(
        [0.5, 0.5],
        [[1.0, 1.0], [-1.0, -1.0]],
        [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]],
    )
    data = gmm_gem.sample(truth, 1000, 7)
    assert len(data) == 1000 and len(data[0]) == 2
    assert data == truth.sample(1000, 7)

    h = truth.responsibilities(data)
    assert all(abs(sum(row) - 1.0) < 1e-12 for row in h)

    init = gmm_gem.GaussianMixture(
        [0.5, 0.5],
        [[-3.0, 3.0], [3.0, -3.0]],
        [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]],
    )
    pb = gmm_gem.pb_gem_step(init, data)
    shifted = gmm_gem.shifted_em_step(init, data)
    assert max(abs(a - b) for a, b in zip(pb.flatten(), shifted.flatten())) < 1e-10
    assert len(gmm_gem.gradient(init, data)) == len(init.flatten())

    result = gmm_gem.run(init, data, "pb-gem")
    assert result.termination == "tolerance"
    lls = result.log_likelihoods
    assert all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))
    assert abs(sum(result.final_params.alpha) - 1.0) < 1e-12
    print(result, "final log-likelihood", lls[-1])

    assert gmm_gem.rate_bound(0.5, 1.5) == 0.5
    mu, lam = gmm_gem.min_feasible_rate(0.5, 1.5)
    assert abs(mu - 0.5) < 1e-9 and gmm_gem.lmi_check(mu, lam, 0.5, 1.5)

    radius, moduli, kind = gmm_gem.jacobian_spectrum(result.final_params, data)
    assert 0.0 <= radius < 1.0 + 1e-6 and math.isclose(radius, moduli[0])
    print("spectral radius", radius, kind)

    same = gmm_gem.GaussianMixture.from_json(truth.to_json())
    assert same.flatten() == truth.flatten()

    try:
        gmm_gem.GaussianMixture([0.5, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    except gmm_gem.GemError:
        pass
    else:
        raise AssertionError("invalid weights accepted")
    print("ok")


if __name__ == "__main__":
    main()
