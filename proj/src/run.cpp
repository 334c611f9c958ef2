namespace starshift {}
