"""Precision and recall of verified chains against known chains."""

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import yaml

from src.classmodel.model import MethodId
from src.common.errors import KbSchemaError
from src.common.logger import setup_logger
from src.search.chain_search import GadgetChain
from src.verification.verifier import VerificationResult

logger = setup_logger(__name__)

GadgetSequence = tuple[MethodId, ...]
KnownChain = Union[GadgetChain, GadgetSequence]


@dataclass(frozen=True)
class Metrics:
    """Report-level counts and ratios.

    Attributes:
        rep: Verified chains reported
        tp: Verified chains equal to a known chain
        kgc: Known chains
        precision: tp / rep, None when rep is 0
        recall: tp / kgc, None when kgc is 0
    """

    rep: int
    tp: int
    kgc: int
    precision: Optional[Fraction]
    recall: Optional[Fraction]

    @property
    def precision_undefined(self) -> bool:
        return self.precision is None

    def to_dict(self) -> dict[str, Any]:
        def ratio(value: Optional[Fraction]) -> Optional[dict[str, Any]]:
            if value is None:
                return None
            return {
                "numerator": value.numerator,
                "denominator": value.denominator,
                "value": round(float(value), 6),
            }

        return {
            "rep": self.rep,
            "tp": self.tp,
            "kgc": self.kgc,
            "precision": ratio(self.precision),
            "recall": ratio(self.recall),
            "precision_undefined": self.precision_undefined,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Metrics":
        def ratio(value: Optional[dict[str, Any]]) -> Optional[Fraction]:
            return None if value is None else Fraction(value["numerator"], value["denominator"])

        return cls(
            data["rep"], data["tp"], data["kgc"], ratio(data["precision"]), ratio(data["recall"])
        )


def metrics_from_counts(rep: int, tp: int, kgc: int) -> Metrics:
    """
    Ratios from raw counts.

    Args:
        rep: Verified chains reported
        tp: True positives
        kgc: Known chains

    Returns:
        Metrics; a zero denominator leaves the ratio undefined
    """
    if tp > rep:
        raise ValueError(f"true positives ({tp}) exceed reported chains ({rep})")
    precision = Fraction(tp, rep) if rep else None
    recall = Fraction(tp, kgc) if kgc else None
    return Metrics(rep, tp, kgc, precision, recall)


def _sequence(chain: KnownChain) -> GadgetSequence:
    return chain.gadgets if isinstance(chain, GadgetChain) else tuple(chain)


def compute_metrics(
    results: Iterable[VerificationResult], known_chains: Sequence[KnownChain]
) -> Metrics:
    """
    Compare verified chains with ground truth by gadget sequence.

    Args:
        results: Verification results
        known_chains: Known chains or their gadget sequences

    Returns:
        rep, tp, precision and recall
    """
    known = {_sequence(c) for c in known_chains}
    verified = [r for r in results if r.is_verified]
    tp = sum(1 for r in verified if r.chain.gadgets in known)
    metrics = metrics_from_counts(len(verified), tp, len(known))
    if metrics.precision_undefined:
        logger.warning("No verified chains; precision is undefined")
    return metrics


def load_known_chains(source: Union[str, Path]) -> list[GadgetSequence]:
    """
    Load a ground-truth file.

    The document is a mapping with a ``chains`` list; each chain is a list of
    methods written as ``owner.name(descriptor)``, or a mapping with a
    ``gadgets`` list and an optional ``name``.

    Args:
        source: Path of the YAML file

    Returns:
        Gadget sequences in file order

    Raises:
        KbSchemaError: If the document is malformed
    """
    path = str(source)
    try:
        document = yaml.safe_load(Path(path).read_text())
    except OSError as e:
        raise KbSchemaError(path, f"cannot read known chains: {e}") from e
    except yaml.YAMLError as e:
        raise KbSchemaError(path, f"invalid YAML: {e}") from e

    if not isinstance(document, dict) or not isinstance(document.get("chains"), list):
        raise KbSchemaError(path, "expected a mapping with a 'chains' list")

    chains = []
    for i, entry in enumerate(document["chains"]):
        gadgets = entry.get("gadgets") if isinstance(entry, dict) else entry
        if not isinstance(gadgets, list) or len(gadgets) < 2:
            raise KbSchemaError(f"chains[{i}]", "a chain needs at least two gadgets")
        try:
            chains.append(tuple(MethodId.parse(str(g)) for g in gadgets))
        except ValueError as e:
            raise KbSchemaError(f"chains[{i}]", str(e)) from e
    return chains
