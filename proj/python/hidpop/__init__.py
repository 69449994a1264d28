"""Bayesian spatial stochastic frontier for hidden-population estimation."""

from ._hidpop import (
    CarDf,
    ChainConfig,
    DgpConfig,
    ErrorLaw,
    FormatError,
    MapeMode,
    NumericalError,
    PanelDataset,
    PriorConfig,
    ValidationError,
    coverage,
    exceedance_probability,
    graph_from_edges,
    hdi,
    hidden_population_intervals,
    hotspot_tiers,
    lambda_of,
    lambda_scenario,
    load_adjacency,
    mape,
    queen_grid,
    read_draws,
    read_panel_csv,
    rho_hat,
    run_chains,
    simulate,
    sir,
    summarize,
    uncaptured,
    write_draws,
)


def fit(data, graph, *, iters=20000, burn_in=10000, thin=5, seed=1, chains=1, **chain_options):
    """Run `chains` Gibbs chains; extra keyword arguments set ChainConfig fields."""
    config = ChainConfig()
    config.n_iter, config.burn_in, config.thin, config.seed = iters, burn_in, thin, seed
    for key, value in chain_options.items():
        if not hasattr(config, key):
            raise TypeError(f"unknown chain option {key!r}")
        setattr(config, key, value)
    return run_chains(data, graph, PriorConfig(), config, chains)
