"""Privacy-preserving photo sharing and encrypted similarity search.

Owners split photos into a public part and a sealed private region,
outsource homomorphically encrypted feature descriptors, and publish
policy-wrapped search keys.  An untrusted search cloud computes encrypted
pairwise vector distances non-interactively; authorized queriers decrypt,
score, and fetch winning images through padded oblivious transfer.
"""

__version__ = "0.1.0"
