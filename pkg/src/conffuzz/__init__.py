"""conffuzz: grammar-based configuration fuzzing and triage toolkit.

The package fuzzes gNB-style configuration files through derivation-tree
mutation, classifies target outcomes under a timeout, deduplicates and
minimizes crashes, and can auto-document test parameters from autotest logs
and a C source tree.
"""

__version__ = "0.1.0"
