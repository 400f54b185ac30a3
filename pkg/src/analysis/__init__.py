"""Post-hoc analysis of finished runs"""

from analysis.pca import PcaModel, fit_pca
from analysis.statistics import (
    chunked_mad, cluster_separation, epoch_bands, expression_frequency, mad, welch_t_test,
)
from analysis.reports import ReportBundle, RunArtifacts, attention_svg, emit_reports, load_run

__all__ = [
    'PcaModel', 'fit_pca',
    'mad', 'chunked_mad', 'welch_t_test', 'expression_frequency', 'cluster_separation', 'epoch_bands',
    'ReportBundle', 'RunArtifacts', 'emit_reports', 'load_run', 'attention_svg',
]
