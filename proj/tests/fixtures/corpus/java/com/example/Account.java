package com.example;

import java.math.BigDecimal;
import java.util.ArrayList;
import java.util.List;

/** A bank account with an append-only transaction history. */
public class Account {
    private final String id;
    private BigDecimal balance = BigDecimal.ZERO;
    private final List<String> history = new ArrayList<>();

    public Account(String id) {
        this.id = id;
    }

    public String getId() {
        return id;
    }

    public BigDecimal getBalance() {
        return balance;
    }

    public void deposit(BigDecimal amount) {  // @expect func_body {
        if (amount.signum() <= 0) {
            throw new IllegalArgumentException("deposit must be positive: " + amount);
        }
        balance = balance.add(amount);
        history.add("deposit " + amount);
    }

    public boolean withdraw(BigDecimal amount) {
        if (balance.compareTo(amount) < 0) {  // @expect if_body {
            history.add("rejected withdrawal of " + amount + " (insufficient funds)");
            return false;
        }
        balance = balance.subtract(amount);
        history.add("withdraw " + amount);
        return true;
    }

    public List<String> getHistory() {
        return new ArrayList<>(history);
    }
}
