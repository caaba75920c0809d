"""Cost-aware adaptation of quantum circuits to spin-qubit gate sets."""
