"""MMD against unfiltered matching on the CASIA multispectral 850nm images.

Runs only when VEINMATCH_CASIA_DIR points at the extracted image directory.
"""

import os
from pathlib import Path

import pytest

from veinmatch.models.config import PipelineConfig
from veinmatch.models.enums import FilterKind
from veinmatch.services.evaluation import EvaluationService
from veinmatch.services.manifest import ManifestLoader

CASIA_DIR = os.environ.get("VEINMATCH_CASIA_DIR")
CASIA_850_PATTERN = r"(?P<subject>\d+)_(?P<hand>[lr])_850_(?P<sample>\d+)"

pytestmark = [
    pytest.mark.external,
    pytest.mark.slow,
    pytest.mark.skipif(CASIA_DIR is None, reason="VEINMATCH_CASIA_DIR is not set"),
]


@pytest.mark.parametrize("matcher", ["ed", "knn_rt"])
async def test_mmd_lowers_eer_at_every_template_size(matcher: str) -> None:
    manifest = ManifestLoader().load(Path(CASIA_DIR or "."), CASIA_850_PATTERN)
    config = PipelineConfig.from_flat({"matcher.kind": matcher})

    outcome = await EvaluationService(config).evaluate(
        manifest,
        template_sizes=[1, 2, 3, 4, 5],
        filters=[FilterKind.NONE, FilterKind.MMD],
    )

    eer = {(row.filter, row.template_size): row.eer.eer for row in outcome.report.rows}
    for size in range(1, 6):
        assert eer[(FilterKind.MMD, size)] < eer[(FilterKind.NONE, size)]
