"""regqa: dual-graph retrieval and QA over numbered regulatory text.

The pipeline ingests a sectioned corpus, extracts an entity/relation
network with an LLM gateway, builds a section-id navigator graph from the
numbering grammar and cross-references, and answers questions by matching
query entities and triples against vector tables, then expanding matched
sections through the navigator graph.
"""

__version__ = "0.1.0"
