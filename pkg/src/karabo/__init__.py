"""Culturally adaptive CBT dialogue platform.

Corpus preprocessing, a five-stage Ubuntu-centered adaptation pipeline,
the Karabo persona chat service, and boolean-QA dialogue evaluation with
cultural-linguistic checks.
"""

__version__ = "0.1.0"
