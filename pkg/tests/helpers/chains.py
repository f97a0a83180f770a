"""Shortcuts from class models to searched chains."""

from typing import Optional

from src.analysis.dacg import DaCg, build_dacg
from src.analysis.hierarchy import Hierarchy, build_hierarchy
from src.classmodel.model import MethodId
from src.common.analysis_config import AnalysisConfig
from src.knowledge.knowledge_base import default_kb, locate_sink_sites, match_sources
from src.search.chain_search import ChainLimits, GadgetChain, find_chains
from tests.helpers.models import dispatch_ladder

COMPARE_TO = MethodId("javax/naming/ldap/Rdn$RdnEntry", "compareTo", "(Ljava/lang/Object;)I")
XSTRING = "com/sun/org/apache/xpath/internal/objects/XString"
XOBJECT = "com/sun/org/apache/xpath/internal/objects/XObject"
MULTI_DEFAULTS = "javax/swing/MultiUIDefaults"
PROXY_LAZY_VALUE = "javax/swing/UIDefaults$ProxyLazyValue"


def all_chains(g: DaCg, max_len: int = 15) -> list[GadgetChain]:
    kb = default_kb()
    limits = ChainLimits(max_len=max_len)
    return find_chains(g, match_sources(kb, g), locate_sink_sites(kb, g), limits).chains


def chain_from(g: DaCg, source: MethodId) -> GadgetChain:
    """The longest chain starting at ``source``."""
    return max((c for c in all_chains(g) if c.source == source), key=lambda c: c.length)


def ladder(
    levels: int,
    missing_field_at: Optional[int] = None,
    config: Optional[AnalysisConfig] = None,
) -> tuple[GadgetChain, DaCg, Hierarchy]:
    """The single chain through a dispatch ladder, with its graph and hierarchy."""
    config = config or AnalysisConfig()
    h = build_hierarchy(dispatch_ladder(levels, missing_field_at), config)
    g = build_dacg(h, config)
    (chain,) = all_chains(g, max_len=2 * levels + 1)
    return chain, g, h
