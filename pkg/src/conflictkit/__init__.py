"""Toolkit for detecting and characterizing conflict in threaded conversations.

Pipeline stages, one module each: corpus ingestion and reply graphs
(``corpus``), tokenization and feature assembly (``features``), the
logistic-regression conflict classifier (``model``), agreement and rank
statistics (``stats``), cube scoring and zone classification (``agonism``),
the annotation schema (``schema``), the collection service (``service``),
figure rendering (``plots``), and the command line (``cli``).
"""

__version__ = "0.1.0"
