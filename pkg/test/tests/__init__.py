# kinlim test modules
